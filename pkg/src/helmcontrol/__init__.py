"""Active acoustic control: synthesize a source density whose radiated field
meets near-field and far-field prescriptions in free space or a shallow ocean."""

__version__ = "0.1.0"
