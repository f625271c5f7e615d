import sys
from saydream import main

sys.exit(main.main())
