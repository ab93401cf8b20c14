from setuptools import setup
from setuptools.extension import Extension

# The compiled kernels are an optional speed-up; the package falls back to
# chainshare._kernels._pure when the extension is absent.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("chainshare._kernels._speed", ["src/chainshare/_kernels/_speed.pyx"])],
        language_level=3,
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
