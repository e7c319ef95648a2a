# Adaptive moisture sampling simulator source code
