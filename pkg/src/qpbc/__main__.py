from qpbc.cli import main

raise SystemExit(main())
