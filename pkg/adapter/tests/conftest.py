import json
import os

import numpy as np
import pytest
from PIL import Image


@pytest.fixture()
def small_dataset(tmp_path):
    """Three-item dataset with tiny images; item s2 lacks an edited image."""
    images = tmp_path / "images"
    edited = tmp_path / "edited"
    images.mkdir()
    edited.mkdir()
    rng = np.random.default_rng(42)
    items = []
    for i in range(3):
        sid = f"s{i}"
        arr = (rng.uniform(size=(16, 16, 3)) * 255).astype(np.uint8)
        Image.fromarray(arr).save(images / f"{sid}.png")
        if sid != "s2":
            Image.fromarray(255 - arr).save(edited / f"{sid}.png")
        items.append(
            {
                "sample_id": sid,
                "question": f"Is there a car in the image? ({i})",
                "gold": "yes" if i % 2 == 0 else "no",
                "task_tag": "pope-random",
                "image_path": f"{sid}.png",
                "edit_instruction": "a car",
            }
        )
    dataset = tmp_path / "dataset.jsonl"
    with open(dataset, "w") as fp:
        for item in items:
            fp.write(json.dumps(item) + "\n")
    return {
        "dataset": str(dataset),
        "images_dir": str(images),
        "edited_dir": str(edited),
        "tmp": tmp_path,
    }
