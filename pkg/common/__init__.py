# Common package
# Contains the error hierarchy and seed derivation shared by every module
