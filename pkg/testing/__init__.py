# Testing package
# Contains the self-check runner and shared test helpers
