from setuptools import find_packages, setup

setup(
    name='saydream',
    packages=find_packages(exclude=['tests', 'tests.*']),
    package_data={
        'saydream': ['py.typed'],
    },
)
