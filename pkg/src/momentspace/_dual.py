"""Forward-mode dual numbers for exact first derivatives."""

import numpy as np


class Dual:
    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad

    @classmethod
    def variables(cls, values):
        """Seed one dual per value, with unit gradients along each axis."""
        eye = np.eye(len(values))
        return [cls(float(v), eye[i]) for i, v in enumerate(values)]

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.grad + other.grad)
        return Dual(self.val + other, self.grad)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.grad - other.grad)
        return Dual(self.val - other, self.grad)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.grad * other.val + other.grad * self.val)
        return Dual(self.val * other, self.grad * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            v = self.val / other.val
            return Dual(v, (self.grad - v * other.grad) / other.val)
        return Dual(self.val / other, self.grad / other)

    def __rtruediv__(self, other):
        v = other / self.val
        return Dual(v, -v / self.val * self.grad)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.grad!r})"
