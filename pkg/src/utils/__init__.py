# Utility modules for buildyard
