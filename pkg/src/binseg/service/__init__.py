"""HTTP service wrapping the segmentation toolkit."""
