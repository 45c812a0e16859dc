# Autodiff package
# Contains the tensor type, the define-by-run tape and differentiable ops
