"""
.. include:: ../README.md
.. include:: ../CHANGELOG.md
"""
