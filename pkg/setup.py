from setuptools import find_packages, setup

setup(
    name='spherelab',
    packages=find_packages(exclude=['tests', 'tests.*']),
    use_scm_version={'fallback_version': '0.0.0'},
    setup_requires=['setuptools_scm', 'pytest-runner'],
    python_requires='>=3.8',
    install_requires=['Django', 'djangorestframework', 'numpy', 'scipy'],
)
