from .protocol import serve

serve()
