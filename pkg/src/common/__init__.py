"""Configuration, logging and console helpers shared by qcurv."""
