"""Domain packages of the audit toolkit."""
