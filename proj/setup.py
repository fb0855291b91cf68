from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

sources = [
    "bindings/bindings.cpp",
    "src/tensor.cpp",
    "src/autodiff.cpp",
    "src/diffusion.cpp",
    "src/codec.cpp",
    "src/conditioning.cpp",
    "src/models.cpp",
    "src/prototype.cpp",
    "src/io.cpp",
    "src/pipeline.cpp",
    "src/harness.cpp",
]

setup(
    ext_modules=[
        Pybind11Extension(
            "dpd._dpd",
            sources,
            include_dirs=["include", "vendor"],
            cxx_std=20,
            extra_compile_args=["-O2"],
        )
    ],
    cmdclass={"build_ext": build_ext},
)
