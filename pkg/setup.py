"""Build script: compiles the optional trig-product accelerator.

The package works without the extension (qmeas.kernels falls back to the
numpy implementation), so a failed compile only prints a warning.
"""
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, bad toolchain, ...
            print(f"warning: skipping compiled kernels ({exc}); "
                  "the pure-python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "the pure-python fallback will be used")


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: {exc}; compiled kernels will not be built")
        return []
    return cythonize(
        [Extension(
            "qmeas._kernels",
            ["src/qmeas/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        language_level=3,
    )


setup(ext_modules=make_extensions(), cmdclass={"build_ext": OptionalBuildExt})
