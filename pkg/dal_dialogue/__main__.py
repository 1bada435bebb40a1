from dal_dialogue.cli import main

raise SystemExit(main())
