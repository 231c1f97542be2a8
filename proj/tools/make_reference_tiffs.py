"""Writes the reference GeoTIFF fixtures under tests/data with tifffile.

The files are produced by an independent writer so the C++ codec is tested
against bytes it did not write. Pixel values follow

    dn(band, row, col) = 100 + 37 * band + 11 * row + 3 * col

with column 0 zero in every band (a nodata swath). Rerun after changing the
formula; tests/unit/test_raster.cpp computes the same values.
"""
import json
import pathlib

import numpy as np
import tifffile

BANDS = ["B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B11", "B12"]
OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"


def cube(rows, cols, nbands):
    b, r, c = np.meshgrid(np.arange(nbands), np.arange(rows), np.arange(cols), indexing="ij")
    dn = (100 + 37 * b + 11 * r + 3 * c).astype(np.uint16)
    dn[:, :, 0] = 0
    return dn


def gdal_metadata(names):
    items = "".join(
        f'<Item name="DESCRIPTION" sample="{i}" role="description">{n}</Item>' for i, n in enumerate(names)
    )
    return f"<GDALMetadata>{items}</GDALMetadata>"


def geotags(lon0, lat0, step):
    geokeys = (1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, 2048, 0, 1, 4326)
    return [
        (33550, "d", 3, (step, step, 0.0), False),
        (33922, "d", 6, (0.0, 0.0, 0.0, lon0, lat0, 0.0), False),
        (34735, "H", len(geokeys), geokeys, False),
    ]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    step = 10.0 / 111320.0

    data = cube(8, 6, 10)
    tifffile.imwrite(
        OUT / "ref_planar_deflate_be.tif",
        data,
        byteorder=">",
        photometric="minisblack",
        planarconfig="separate",
        compression="zlib",
        predictor=True,
        rowsperstrip=3,
        metadata=None,
        datetime="2024:01:15 00:00:00",
        extratags=geotags(148.1, -23.6, step)
        + [(42112, "s", 0, gdal_metadata(BANDS), False), (42113, "s", 0, "0", False)],
    )

    data = np.moveaxis(cube(32, 32, 10), 0, -1)
    tifffile.imwrite(
        OUT / "ref_chunky_tiled.tif",
        data,
        byteorder="<",
        photometric="minisblack",
        planarconfig="contig",
        tile=(16, 16),
        metadata=None,
        extratags=geotags(6.45, 51.1, step),
    )
    (OUT / "ref_chunky_tiled.tif.json").write_text(
        json.dumps({"scene_id": "REF_CHUNKY", "capture_date": "2024-06-12", "bands": BANDS}, indent=2) + "\n"
    )

    names = [n for n in BANDS if n != "B8A"]
    tifffile.imwrite(
        OUT / "ref_missing_b8a.tif",
        cube(4, 4, 9),
        photometric="minisblack",
        planarconfig="separate",
        metadata=None,
        datetime="2024:01:15 00:00:00",
        extratags=geotags(0.0, 0.0, step) + [(42112, "s", 0, gdal_metadata(names), False)],
    )

    tifffile.imwrite(
        OUT / "ref_no_georef.tif",
        cube(4, 4, 10),
        photometric="minisblack",
        planarconfig="separate",
        metadata=None,
        datetime="2024:01:15 00:00:00",
        extratags=[(42112, "s", 0, gdal_metadata(BANDS), False)],
    )


if __name__ == "__main__":
    main()
