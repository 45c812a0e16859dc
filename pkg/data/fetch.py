"""
MNIST Download
Fetches the gzipped IDX files over HTTP
"""

import logging
import os
from pathlib import Path

import requests

from common.errors import ArtifactIOError
from data.idx import MNIST_FILES

logger = logging.getLogger(__name__)

DEFAULT_MNIST_URL = "https://ossci-datasets.s3.amazonaws.com/mnist/"
CHUNK_SIZE = 1 << 16


def fetch_mnist(dest_dir, base_url=None, timeout=30, overwrite=False):
    """
    Download the four MNIST files into dest_dir

    Args:
        dest_dir: Output directory, created if missing
        base_url: Mirror prefix; defaults to SALGRAD_MNIST_URL or a public mirror
        timeout: Per-request timeout in seconds
        overwrite: Re-download files that already exist

    Returns:
        List of written paths
    """
    base_url = base_url or os.getenv("SALGRAD_MNIST_URL", DEFAULT_MNIST_URL)
    if not base_url.endswith("/"):
        base_url += "/"
    dest_dir = Path(dest_dir)
    try:
        dest_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(f"cannot create {dest_dir}: {e}")

    written = []
    for stems in MNIST_FILES.values():
        for stem in stems:
            target = dest_dir / f"{stem}.gz"
            if target.exists() and not overwrite:
                logger.info(f"Already present: {target}")
                written.append(target)
                continue
            url = f"{base_url}{stem}.gz"
            logger.info(f"Downloading {url}")
            partial = target.with_suffix(".gz.part")
            try:
                response = requests.get(url, stream=True, timeout=timeout)
                response.raise_for_status()
                with open(partial, "wb") as f:
                    for chunk in response.iter_content(chunk_size=CHUNK_SIZE):
                        if chunk:
                            f.write(chunk)
                partial.replace(target)
            except requests.RequestException as e:
                partial.unlink(missing_ok=True)
                raise ArtifactIOError(f"download of {url} failed: {e}")
            except OSError as e:
                partial.unlink(missing_ok=True)
                raise ArtifactIOError(f"cannot write {target}: {e}")
            written.append(target)
    return written
