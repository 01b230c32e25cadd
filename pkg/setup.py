import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "hriad.nn._kernels",
        ["src/hriad/nn/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

# Without Cython the package still installs; hriad.nn falls back to the
# numpy kernels at import time.
setup(ext_modules=cythonize(extensions, language_level=3) if cythonize else [])
