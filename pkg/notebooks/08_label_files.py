# %% [markdown]
# # Label files
#
# Each point's label is one little-endian uint32: the semantic class in the
# lower 16 bits and the instance id in the upper 16 bits.

# %%
import tempfile
from pathlib import Path

import numpy as np

from pseudoheat.io import decode_labels, encode_labels, read_label_file, write_label_file

words = np.array([0x00010001, 0x00070009, 0], dtype=np.uint32)
lab = decode_labels(words)
print("semantic", lab.semantic.tolist(), "instance", lab.instance.tolist())

# %%
with tempfile.TemporaryDirectory() as d:
    p = Path(d) / "frame.label"
    write_label_file(p, lab)
    print("bytes on disk:", p.read_bytes().hex(" ", 4))
    assert np.array_equal(encode_labels(read_label_file(p)), words)
