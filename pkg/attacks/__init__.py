# Attacks package
# Contains the white-box FGSM, BIM, PGD and MIM generators
