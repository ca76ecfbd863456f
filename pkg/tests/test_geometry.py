import math

import pytest
from hypothesis import given, strategies as st

from foodweight.errors import DegenerateBox
from foodweight.geometry import (
    BoundingBox,
    area,
    clamp_to_image,
    intersection_area,
    iou,
    outward_pixel_bounds,
)

boxes = st.builds(
    lambda x, y, w, h: BoundingBox(x, y, x + w, y + h),
    st.floats(0, 500),
    st.floats(0, 500),
    st.floats(0.1, 500),
    st.floats(0.1, 500),
)


class TestBoundingBox:
    def test_width_height(self):
        b = BoundingBox(2, 3, 4, 9)
        assert b.width == 2
        assert b.height == 6

    @pytest.mark.parametrize(
        "coords",
        [(0, 0, 0, 10), (0, 0, 10, 0), (5, 0, 5, 5), (10, 10, 5, 20), (0, 0, -1, 5)],
    )
    def test_rejects_non_positive_extent(self, coords):
        with pytest.raises(DegenerateBox):
            BoundingBox(*coords)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(DegenerateBox):
            BoundingBox(0, 0, bad, 10)


class TestArea:
    def test_unit_square_grid(self):
        assert area(BoundingBox(0, 0, 10, 10)) == 100

    def test_hand_arithmetic(self):
        # 2 wide x 6 high
        assert area(BoundingBox(2, 3, 4, 9)) == 12

    def test_standard_crop_size(self):
        assert area(BoundingBox(0, 0, 224, 224)) == 50176


class TestIou:
    def test_identical_boxes_exactly_one(self):
        b = BoundingBox(3.7, 1.2, 9.9, 4.4)
        assert iou(b, b) == 1.0

    def test_disjoint_is_zero(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 30, 30)) == 0.0

    def test_half_overlap_hand_value(self):
        # intersection 50, union 150
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(5, 0, 15, 10)
        assert iou(a, b) == 1 / 3

    @given(boxes, boxes)
    def test_symmetry(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(boxes, boxes)
    def test_range(self, a, b):
        assert 0.0 <= iou(a, b) <= 1.0

    @given(boxes)
    def test_self_iou_is_one(self, b):
        assert iou(b, b) == 1.0

    @given(boxes, boxes)
    def test_intersection_bounded_by_smaller_area(self, a, b):
        assert intersection_area(a, b) <= min(area(a), area(b)) * (1 + 1e-12)


class TestClampToImage:
    def test_clips_negative_origin(self):
        clamped = clamp_to_image(BoundingBox(-5, -5, 10, 10), 100, 100)
        assert clamped.as_tuple() == (0, 0, 10, 10)

    def test_identity_when_inside(self):
        b = BoundingBox(0, 0, 10, 10)
        assert clamp_to_image(b, 100, 100).as_tuple() == b.as_tuple()

    def test_clips_overflow(self):
        clamped = clamp_to_image(BoundingBox(90, 90, 120, 130), 100, 100)
        assert clamped.as_tuple() == (90, 90, 100, 100)

    def test_collapse_raises(self):
        with pytest.raises(DegenerateBox):
            clamp_to_image(BoundingBox(200, 200, 300, 300), 100, 100)

    def test_bad_image_dims(self):
        with pytest.raises(ValueError):
            clamp_to_image(BoundingBox(0, 0, 1, 1), 0, 10)


class TestOutwardPixelBounds:
    def test_fractional_box_rounds_outward(self):
        assert outward_pixel_bounds(BoundingBox(1.2, 1.2, 2.8, 2.8)) == (1, 1, 3, 3)

    def test_integer_box_unchanged(self):
        assert outward_pixel_bounds(BoundingBox(1, 2, 3, 4)) == (1, 2, 3, 4)
