# -*- coding: utf-8 -*-
# ------------------------------------------------------------------------------
#  This file (__main__.py) is part of loft_optim                               -
#  Copyright © 2026 the loft_optim authors.                                    -
#                                                                              -
#  This code is released under the MIT License                                 -
#  https://opensource.org/licenses/mit-license.php                             -
#  Please see the file LICENSE for details.                                    -
# ------------------------------------------------------------------------------
import sys

from .cli import main

if __name__ == '__main__':
    sys.exit(main())
