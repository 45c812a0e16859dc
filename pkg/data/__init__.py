# Data package
# Contains dataset containers, IDX parsing, the synthetic set and MNIST download
