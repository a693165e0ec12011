# CLI commands
