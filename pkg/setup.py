"""Build script: compiles the optional Cython kinematics kernels.

If Cython or a C compiler is unavailable the build proceeds without the
extension; the package falls back to the numpy reference kernels at import.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "motionlab.backends._fastkin",
                ["src/motionlab/backends/_fastkin.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3, "embedsignature": True},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
