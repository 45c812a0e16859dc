# Training package
# Contains regular and saliency-guided training
