from prefmo.cli import main

raise SystemExit(main())
