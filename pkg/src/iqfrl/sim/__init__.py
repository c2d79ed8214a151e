"""2-D wall-following simulator, supervisor and benchmark."""
