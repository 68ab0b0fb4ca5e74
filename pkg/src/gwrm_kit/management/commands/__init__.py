# Subcommands of the gwrm-kit CLI, one module per command.
