import os
import subprocess
import sys

# Working directories used by the solver
PROJECT_DIR = os.path.dirname(os.path.abspath(__file__))
RUNTIME_DIRS = ["logs", "out", os.path.join("tmp", "plots")]
REQUIREMENTS_FILE = os.path.join(PROJECT_DIR, "requirements.txt")

# Required Python packages (import name -> pip name)
PYTHON_PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "pandas": "pandas",
    "PIL": "pillow",
    "dotenv": "python-dotenv",
    "pytest": "pytest",
}


def is_python_package_installed(package):
    """Check if a Python package is importable."""
    return subprocess.run([sys.executable, "-c", f"import {package}"], stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL).returncode == 0


def install_python_packages():
    """Ensure all required Python packages are installed."""
    missing_packages = [pip_name for module, pip_name in PYTHON_PACKAGES.items() if not is_python_package_installed(module)]

    if missing_packages:
        print(f"🐍 Installing missing Python packages: {', '.join(missing_packages)}")
        subprocess.run([sys.executable, "-m", "pip", "install", "-r", REQUIREMENTS_FILE], check=True)
    else:
        print("✅ All Python packages are already installed.")


def prepare_directories():
    """Create the log, output and plot directories."""
    for directory in RUNTIME_DIRS:
        path = os.path.join(PROJECT_DIR, directory)
        os.makedirs(path, exist_ok=True)
        print(f"📁 {path}")


def main():
    """Run setup checks before starting frcSolver."""
    print("🚀 Running frcSolver setup checks...")
    install_python_packages()
    prepare_directories()
    print("✅ Setup complete!")


if __name__ == "__main__":
    main()
    # Invoked by packaging tools (pip / setuptools commands): hand off to setuptools,
    # which reads the package metadata from pyproject.toml.
    if len(sys.argv) > 1:
        from setuptools import setup
        setup()
