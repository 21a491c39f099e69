"""Build the optional Cython kernels.

If Cython is missing or the compiler fails, the package installs without
the extension and ``homodyne_ml._backend`` falls back to the NumPy kernels.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None:
    try:
        ext_modules = cythonize(
            [
                Extension(
                    "homodyne_ml._kernels",
                    ["src/homodyne_ml/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # pragma: no cover
        print(f"warning: skipping compiled kernels ({exc})")

setup(ext_modules=ext_modules)
