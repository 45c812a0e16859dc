# Evaluation package
# Contains clean accuracy, robustness sweeps and the CSV/SVG reports
