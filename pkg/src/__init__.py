# Make the repository's `src` directory a package root so absolute imports
# like `src.qcurv.*` resolve.
