from .render import FigureSpec, RenderError, RenderResult, render

__all__ = ["FigureSpec", "RenderError", "RenderResult", "render"]
