from qsd.main import main

raise SystemExit(main())
