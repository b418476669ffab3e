"""Persistence: replay storage, metrics CSV streams and demonstration seeding."""
