# Schema package
# Contains configuration and result-row schemas and their validator
