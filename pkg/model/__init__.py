# Model package
# Contains the classifier architectures, the Adadelta optimizer and checkpoints
