"""HTTP facade for the curation workflow."""
