from sgefem.cli import main
import sys
sys.exit(main())
