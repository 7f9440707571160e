"""Build shim for the optional compiled kernel.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time); the kernel exists to keep the
per-cycle CRC work off the interpreter's back.
"""

import setuptools

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [setuptools.Extension("dexmouse._kernels", ["src/dexmouse/_kernels.pyx"])],
        compiler_directives={"language_level": "3"},
    )

setuptools.setup(ext_modules=extensions)
