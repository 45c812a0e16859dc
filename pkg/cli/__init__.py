# CLI package
# Contains the command-line front-end: train, attack, sweep, report, selfcheck, fetch
