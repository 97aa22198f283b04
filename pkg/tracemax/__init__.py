"""Single-packet IP traceback: port ID assignment, option codec, router
marking, backward path reconstruction and an attack simulator."""
