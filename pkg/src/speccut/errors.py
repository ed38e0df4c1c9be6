class ConfigurationError(ValueError):
    """Invalid model, noise or scenario configuration, detected before any computation."""
