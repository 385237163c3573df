import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the C kernels on plain IEEE double ops so the
# compiled backend stays bit-identical to the numpy reference backend.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "meshlayers._native",
                ["src/meshlayers/_native.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
)
