"""Lossless crop archive for PixelNav"""

import io
import zipfile
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

import numpy as np

# zip entries carry this timestamp so identical contents give identical bytes
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


class CropArchive:
    """Per-trajectory uint8 RGB tiles stored as .npy members of one zip file"""

    def __init__(self, archive_path):
        self.archive_path = Path(archive_path)

    @staticmethod
    def member_name(trajectory_id: str) -> str:
        return f"{trajectory_id}.npy"

    def write(self, tiles: Iterable[Tuple[str, np.ndarray]]) -> Path:
        """
        Write the archive

        Args:
            tiles: (trajectory id, uint8 array [frames, size, size, 3]) pairs

        Returns:
            Path to the created archive
        """
        self.archive_path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(self.archive_path, 'w', zipfile.ZIP_DEFLATED) as zipf:
            for trajectory_id, array in tiles:
                array = np.ascontiguousarray(array, dtype=np.uint8)
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, array, allow_pickle=False)
                info = zipfile.ZipInfo(self.member_name(trajectory_id), date_time=_FIXED_DATE)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                zipf.writestr(info, buffer.getvalue())
        return self.archive_path

    def read(self, trajectory_id: str) -> np.ndarray:
        if not self.archive_path.exists():
            raise FileNotFoundError(f"Crop archive not found: {self.archive_path}")
        with zipfile.ZipFile(self.archive_path, 'r') as zipf:
            with zipf.open(self.member_name(trajectory_id)) as member:
                return np.lib.format.read_array(io.BytesIO(member.read()), allow_pickle=False)

    def read_all(self) -> Dict[str, np.ndarray]:
        """Every member keyed by trajectory id"""
        if not self.archive_path.exists():
            raise FileNotFoundError(f"Crop archive not found: {self.archive_path}")
        tiles = {}
        with zipfile.ZipFile(self.archive_path, 'r') as zipf:
            for name in zipf.namelist():
                with zipf.open(name) as member:
                    tiles[name[:-len(".npy")]] = np.lib.format.read_array(io.BytesIO(member.read()), allow_pickle=False)
        return tiles

    def list_ids(self) -> List[str]:
        with zipfile.ZipFile(self.archive_path, 'r') as zipf:
            return [name[:-len(".npy")] for name in zipf.namelist()]
