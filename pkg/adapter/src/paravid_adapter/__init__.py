"""Reference provider service for the paravid wire protocol."""

from paravid_adapter.app import AdapterConfig, create_app

__all__ = ["AdapterConfig", "create_app"]
