from setuptools import find_packages, setup
from glob import glob

package_name = 'greening_forge'

setup(
    name=package_name,
    version='0.1.0',
    packages=find_packages(exclude=['test']),
    data_files=[
        ('share/' + package_name + '/config', glob('config/*.yaml')),
    ],
    install_requires=[
        'setuptools',
        'numpy',
        'scipy',
        'opencv-python-headless',
        'Shapely',
        'matplotlib',
        'PyYAML',
    ],
    python_requires='>=3.9',
    zip_safe=True,
    description='Synthetic greening defects for autochrome restoration: paired data, '
                'weighted loss, quality metrics and a histogram-matching baseline',
    license='Apache-2.0',
    tests_require=['flake8', 'pydocstyle', 'pytest'],
    entry_points={
        'console_scripts': [
            'greening_forge = greening_forge.ForgeCli:main',
        ],
    },
)
