"""
Counting time classes
=====================

A user picked up at 8:00, 8:05 and 8:10 sees one time class with a 15 minute
width.  Spread the same pickups 20 minutes apart and every day becomes its
own class.
"""

from tcdarp.consistency import time_classes

W = 15

for label, times in [("tight", [480, 485, 490]),
                     ("spread", [480, 500, 520, 540, 560]),
                     ("two groups", [480, 492, 504])]:
    n, windows = time_classes(times, W)
    print(f"{label:>10}: {n} class(es), windows {windows}")

# windows are closed: two times exactly W apart still share one
print(time_classes([480, 495], W)[0])
