# Data models for buildyard
