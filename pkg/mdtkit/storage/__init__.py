"""Reading and writing transform sets, correspondences, results and images."""
