"""Management-command framework and subcommands of the gwrm-kit CLI."""
