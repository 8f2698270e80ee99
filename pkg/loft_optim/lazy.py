# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (lazy.py) is part of loft_optim                                   -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
"""
Provides the `Lazy` decorator for properties that are computed once (factorizations, Gram matrices) and the
`preloadable` decorator that lets a class compute all of them on construction.
"""

from functools import update_wrapper
from .util import logger


# noinspection PyMethodOverriding
class Lazy(property):
    """
    Return a lazy property attribute.

    Used exactly like :py:class:`property`. The decorated function is evaluated on first access and the result is
    stored as a private attribute (``_<name>``). Assigning to the attribute replaces the cached value, deleting it
    drops the cache so that the next access recomputes it.

    :Example:

    >>> class Target:
    >>>     def __init__(self, a):
    >>>         self.a = a
    >>>
    >>>     @Lazy
    >>>     def svd(self):
    >>>         print('factorizing')
    >>>         return np.linalg.svd(self.a)
    >>>
    >>> t = Target(np.eye(3))
    >>> _ = t.svd
    factorizing
    >>> _ = t.svd  # cached
    >>> del t.svd  # next access factorizes again

    .. seealso:: :py:func:`.lazy.preloadable`
    """
    def __init__(self, fget=None, fset=None, fdel=None, doc=None):
        self.private_name = "_{}".format(fget.__name__)
        doc = doc or fget.__doc__
        property.__init__(self, fget=fget, fset=fset, fdel=fdel, doc=doc)

        # noinspection PyTypeChecker
        update_wrapper(self, fget)

        if type(self.__doc__) is str:
            self.__doc__ = """
            .. note:: This property is computed once and cached. For details see :py:class:`.lazy.Lazy`

            {old_doc}
            """.format(old_doc=self.__doc__)

    def __get__(self, instance, owner):
        if instance is None:
            return self
        if not hasattr(instance, self.private_name):
            logger.debug('(Lazy) computing {}.{}'.format(owner.__name__, self.fget.__name__))
            # noinspection PyArgumentList
            setattr(instance, self.private_name, self.fget(instance))
        return getattr(instance, self.private_name)

    def __set__(self, instance, value):
        if self.fset is None:
            setattr(instance, self.private_name, value)
        else:
            # noinspection PyArgumentList
            self.fset(instance, value)

    def __delete__(self, instance):
        if self.fdel is None:
            if hasattr(instance, self.private_name):
                delattr(instance, self.private_name)
        else:
            # noinspection PyArgumentList
            self.fdel(instance)


def lazy_attributes(cls):
    """
    :return: names of all :py:class:`Lazy` attributes of a class, parents included
    :rtype: list[str]
    """
    return sorted({name for klass in cls.__mro__ for name, attr in vars(klass).items() if isinstance(attr, Lazy)})


def preloadable(cls):
    """
    Class decorator for classes with :py:class:`Lazy` attributes. The decorated class accepts ``preload=True`` on
    construction to evaluate every lazy attribute right away and gains a ``preload()`` method that recomputes them
    all, cached or not.

    :Example:

    >>> @preloadable
    >>> class Target:
    >>>     @Lazy
    >>>     def svd(self):
    >>>         print('factorizing')
    >>>         return None
    >>>
    >>> t = Target(preload=True)
    factorizing
    >>> t.preload()
    factorizing
    """

    def _preload(self):
        for name in lazy_attributes(type(self)):
            delattr(self, name)
            getattr(self, name)
            logger.debug('Preloaded {} of {}'.format(name, type(self).__name__))

    original_init = cls.__init__
    cls.preload = _preload

    def _new_init(self, *args, **kwargs):
        preload_enabled = kwargs.pop('preload', False)
        original_init(self, *args, **kwargs)
        if preload_enabled:
            self.preload()

    cls.__init__ = _new_init

    return cls
