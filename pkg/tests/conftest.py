from importlib import resources
from pathlib import Path


def config_path(name: str) -> Path:
    """Path of a config shipped inside the package."""
    return Path(str(resources.files("ergosearch") / "configs" / f"{name}.cfg"))


def small_cavity_text(duration: float = 20.0, targets: int = 200) -> str:
    """Shipped cavity config on a coarser grid with a short single phase."""
    text = config_path("cavity").read_text()
    text = text.replace("h = 0.01", "h = 0.02")
    text = text.replace("phase_duration = 900", f"phase_duration = {duration:g}")
    text = text.replace("count = 1000", f"count = {targets}")
    text = text.replace("snapshot_every = 500", "snapshot_every = 50")
    return text


def write_small_cavity(directory: Path, name: str = "tiny", **kw) -> Path:
    p = Path(directory) / f"{name}.cfg"
    p.write_text(small_cavity_text(**kw))
    return p
