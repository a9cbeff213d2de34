import numpy
from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to a pure
# numpy/scipy implementation when the extension is unavailable.
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "liouville._ckernels",
                ["src/liouville/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
