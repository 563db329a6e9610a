"""Period-doubling renormalization of unimodal and Henon-like maps."""
