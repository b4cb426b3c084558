"""Output shape implied by a query, and conformance checks against it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

from scrapeql.query import Query, Step, require_valid

__all__ = [
    "ScalarShape",
    "ObjectShape",
    "ArrayShape",
    "ChoiceShape",
    "Key",
    "Shape",
    "output_shape",
    "conforms",
    "ITEMS_KEY",
]

ITEMS_KEY = "items"


@dataclass(frozen=True)
class ScalarShape:
    """A field value: a string, a list of strings, or null."""

    def template(self) -> Any:
        return "<value>"


@dataclass(frozen=True)
class Key:
    name: str
    shape: Shape
    required: bool = True


@dataclass(frozen=True)
class ObjectShape:
    keys: tuple[Key, ...]

    @property
    def names(self) -> list[str]:
        return [k.name for k in self.keys]

    def template(self) -> Any:
        return {(k.name if k.required else k.name + "?"): k.shape.template() for k in self.keys}


@dataclass(frozen=True)
class ArrayShape:
    item: Shape

    def template(self) -> Any:
        return [self.item.template()]


@dataclass(frozen=True)
class ChoiceShape:
    options: tuple[ObjectShape, ...]

    def template(self) -> Any:
        return {"oneOf": [o.template() for o in self.options]}


Shape = Union[ScalarShape, ObjectShape, ArrayShape, ChoiceShape]

SCALAR = ScalarShape()


def _choice(objects: list[ObjectShape]) -> Shape:
    unique = list(dict.fromkeys(objects))
    if len(unique) == 1:
        return unique[0]
    return ChoiceShape(tuple(unique))


def _step_shape(step: Step) -> ObjectShape:
    keys: dict[str, Key] = {}
    for name in step.field_names:
        keys[name] = Key(name, SCALAR)
    if step.follow is not None:
        unnamed: list[ObjectShape] = []
        for inner in step.follow.steps:
            inner_shape = _step_shape(inner)
            if inner.name is not None:
                keys[inner.name] = Key(inner.name, ArrayShape(inner_shape))
            else:
                unnamed.append(inner_shape)
                # merged keys never overwrite, and only appear when exactly one record matched
                for k in inner_shape.keys:
                    if k.name not in keys:
                        keys[k.name] = Key(k.name, k.shape, required=False)
        if unnamed and ITEMS_KEY not in keys:
            keys[ITEMS_KEY] = Key(ITEMS_KEY, ArrayShape(_choice(unnamed)), required=False)
    return ObjectShape(tuple(keys.values()))


def output_shape(query: Query) -> ArrayShape:
    """Shape of the record array ``execute(query, ...)`` returns."""
    require_valid(query)
    return ArrayShape(_choice([_step_shape(s) for s in query.steps]))


def _is_scalar(value: Any) -> bool:
    if value is None or isinstance(value, str):
        return True
    return isinstance(value, list) and len(value) >= 2 and all(isinstance(v, str) for v in value)


def conforms(value: Any, shape: Shape, path: str = "$") -> list[str]:
    """Problems found checking ``value`` against ``shape`` (empty when it conforms)."""
    if isinstance(shape, ScalarShape):
        if _is_scalar(value):
            return []
        return [f"{path}: expected a string, list of strings or null, got {value!r}"]
    if isinstance(shape, ArrayShape):
        if not isinstance(value, list):
            return [f"{path}: expected an array, got {type(value).__name__}"]
        out: list[str] = []
        for i, item in enumerate(value):
            out.extend(conforms(item, shape.item, f"{path}[{i}]"))
        return out
    if isinstance(shape, ChoiceShape):
        attempts = [conforms(value, option, path) for option in shape.options]
        if any(not a for a in attempts):
            return []
        return [f"{path}: matches none of {len(shape.options)} record shapes"] + min(attempts, key=len)
    if not isinstance(value, dict):
        return [f"{path}: expected an object, got {type(value).__name__}"]
    out = []
    declared = {k.name: k for k in shape.keys}
    for key in shape.keys:
        if key.name not in value:
            if key.required:
                out.append(f"{path}: missing key {key.name!r}")
            continue
        out.extend(conforms(value[key.name], key.shape, f"{path}.{key.name}"))
    for name in value:
        if name not in declared:
            out.append(f"{path}: unexpected key {name!r}")
    return out
