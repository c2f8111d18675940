# Service implementations for buildyard
