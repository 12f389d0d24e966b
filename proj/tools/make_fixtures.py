"""Regenerates the fixture scene images under fixtures/.

Each PNG carries an `s2a-scene` tEXt chunk naming the fixture scene it
depicts; the fixture vision backend reads that tag.
"""
from pathlib import Path

from PIL import Image, ImageDraw
from PIL.PngImagePlugin import PngInfo

OUT = Path(__file__).resolve().parent.parent / "fixtures"

# scene name -> (sky colour, ground colour)
SCENES = {
    "countryside": ((150, 200, 240), (90, 160, 70)),
    "seabeach": ((120, 190, 235), (230, 210, 150)),
    "foodcourt": ((200, 180, 160), (120, 100, 90)),
    "silent-night-sky": ((10, 15, 40), (5, 5, 15)),
}


def render(sky, ground, w=96, h=64):
    img = Image.new("RGB", (w, h), sky)
    draw = ImageDraw.Draw(img)
    draw.rectangle([0, h * 2 // 3, w, h], fill=ground)
    return img


def main():
    OUT.mkdir(exist_ok=True)
    for name, (sky, ground) in SCENES.items():
        info = PngInfo()
        info.add_text("s2a-scene", name)
        render(sky, ground).save(OUT / f"{name}.png", pnginfo=info, optimize=False)
    render((180, 180, 200), (60, 60, 60)).save(OUT / "untagged.jpg", quality=90)
    (OUT / "not_an_image.txt").write_text("this is not an image\n")


if __name__ == "__main__":
    main()
