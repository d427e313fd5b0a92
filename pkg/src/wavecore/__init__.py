"""Mini-batch serialization scheduling and WaveCore performance modeling."""
