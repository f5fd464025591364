"""Closed phrase types for every primitive.

Arithmetic and assignment are data-type indexed (instantiated at num or at a
vector type); the plain num-only versions fall out as the num instance.
"""
from __future__ import annotations

from typing import Dict, List

from .nat import NatVar
from .types import (AccT, Array, CommT, DataVar, DepFnT, ExpT, FnT, Idx, NUM,
                    Pair, PhraseType, ProdT, VECTOR_WIDTHS, Vector, var_t)

COMM = CommT()


def _dep(binders, body: PhraseType) -> PhraseType:
    for name, kind in reversed(binders):
        body = DepFnT(name, kind, body)
    return body


def _fn(*types: PhraseType) -> PhraseType:
    out = types[-1]
    for t in reversed(types[:-1]):
        out = FnT(t, out)
    return out


_n, _m = NatVar("n"), NatVar("m")
_d, _d1, _d2 = DataVar("d"), DataVar("d1"), DataVar("d2")

_e = ExpT
_a = AccT


def _exp_arr(size, elem):
    return ExpT(Array(size, elem))


def _acc_arr(size, elem):
    return AccT(Array(size, elem))


_map_t = _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
              _fn(_fn(_e(_d1), _e(_d2)), _exp_arr(_n, _d1), _exp_arr(_n, _d2)))

_mapi_t = _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
               _fn(FnT(_e(_d1), FnT(_a(_d2), COMM, passive=True)),
                   _exp_arr(_n, _d1), _acc_arr(_n, _d2), COMM))

_parfor_t = _dep([("n", "nat"), ("d", "data")],
                 _fn(_acc_arr(_n, _d),
                     FnT(_e(Idx(_n)), FnT(_a(_d), COMM, passive=True)),
                     COMM))

_new_t = _dep([("d", "data")], _fn(_fn(var_t(_d), COMM), COMM))

PRIMITIVES: Dict[str, PhraseType] = {
    # scalar / vector arithmetic
    "negate": _dep([("d", "data")], _fn(_e(_d), _e(_d))),
    "+": _dep([("d", "data")], _fn(ProdT(_e(_d), _e(_d)), _e(_d))),
    "-": _dep([("d", "data")], _fn(ProdT(_e(_d), _e(_d)), _e(_d))),
    "*": _dep([("d", "data")], _fn(ProdT(_e(_d), _e(_d)), _e(_d))),
    "/": _dep([("d", "data")], _fn(ProdT(_e(_d), _e(_d)), _e(_d))),

    # functional combinators
    "map": _map_t,
    "mapGlobal": _map_t,
    "mapWorkgroup": _map_t,
    "mapLocal": _map_t,
    "mapSeq": _map_t,
    "reduce": _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
                   _fn(_fn(_e(_d1), _e(_d2), _e(_d2)), _e(_d2),
                       _exp_arr(_n, _d1), _e(_d2))),

    # data layout
    "zip": _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
                _fn(_exp_arr(_n, _d1), _exp_arr(_n, _d2),
                    _exp_arr(_n, Pair(_d1, _d2)))),
    "split": _dep([("n", "nat"), ("m", "nat"), ("d", "data")],
                  _fn(_exp_arr(_n * _m, _d), _exp_arr(_m, Array(_n, _d)))),
    "join": _dep([("n", "nat"), ("m", "nat"), ("d", "data")],
                 _fn(_exp_arr(_n, Array(_m, _d)), _exp_arr(_n * _m, _d))),
    "pair": _dep([("d1", "data"), ("d2", "data")],
                 _fn(_e(_d1), _e(_d2),
                     _e(Pair(_d1, _d2)))),
    "fst": _dep([("d1", "data"), ("d2", "data")],
                _fn(_e(Pair(_d1, _d2)), _e(_d1))),
    "snd": _dep([("d1", "data"), ("d2", "data")],
                _fn(_e(Pair(_d1, _d2)), _e(_d2))),

    # address-space wrappers (semantically the identity on functions)
    "toGlobal": _dep([("d1", "data"), ("d2", "data")],
                     _fn(_fn(_e(_d1), _e(_d2)), _e(_d1), _e(_d2))),
    "toLocal": _dep([("d1", "data"), ("d2", "data")],
                    _fn(_fn(_e(_d1), _e(_d2)), _e(_d1), _e(_d2))),
    "toPrivate": _dep([("d1", "data"), ("d2", "data")],
                      _fn(_fn(_e(_d1), _e(_d2)), _e(_d1), _e(_d2))),

    # core imperative
    "skip": COMM,
    "barrier": COMM,  # work-group synchronisation, inserted by the OpenCL
                      # backend; a no-op under sequential semantics
    ";": _fn(ProdT(COMM, COMM), COMM),
    "new": _new_t,
    "newGlobal": _new_t,
    "newLocal": _new_t,
    "newPrivate": _new_t,
    ":=": _dep([("d", "data")], _fn(ProdT(_a(_d), _e(_d)), COMM)),
    "for": _dep([("n", "nat")], _fn(_fn(_e(Idx(_n)), COMM), COMM)),
    "parfor": _parfor_t,
    "parforGlobal": _parfor_t,
    "parforWorkgroup": _parfor_t,
    "parforLocal": _parfor_t,

    # acceptor duals of the layout combinators
    "splitAcc": _dep([("n", "nat"), ("m", "nat"), ("d", "data")],
                     _fn(_acc_arr(_m, Array(_n, _d)), _acc_arr(_n * _m, _d))),
    "joinAcc": _dep([("n", "nat"), ("m", "nat"), ("d", "data")],
                    _fn(_acc_arr(_n * _m, _d), _acc_arr(_n, Array(_m, _d)))),
    "pairAcc1": _dep([("d1", "data"), ("d2", "data")],
                     _fn(_a(Pair(_d1, _d2)), _a(_d1))),
    "pairAcc2": _dep([("d1", "data"), ("d2", "data")],
                     _fn(_a(Pair(_d1, _d2)), _a(_d2))),
    "zipAcc1": _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
                    _fn(_acc_arr(_n, Pair(_d1, _d2)),
                        _acc_arr(_n, _d1))),
    "zipAcc2": _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
                    _fn(_acc_arr(_n, Pair(_d1, _d2)),
                        _acc_arr(_n, _d2))),

    # indexing
    "idx": _dep([("n", "nat"), ("d", "data")],
                _fn(_exp_arr(_n, _d), _e(Idx(_n)), _e(_d))),
    "idxAcc": _dep([("n", "nat"), ("d", "data")],
                   _fn(_acc_arr(_n, _d), _e(Idx(_n)), _a(_d))),

    # intermediate imperative combinators
    "mapI": _mapi_t,
    "mapIGlobal": _mapi_t,
    "mapIWorkgroup": _mapi_t,
    "mapILocal": _mapi_t,
    "mapISeq": _mapi_t,
    "reduceI": _dep([("n", "nat"), ("d1", "data"), ("d2", "data")],
                    _fn(_fn(_e(_d1), _e(_d2), _a(_d2), COMM), _e(_d2),
                        _exp_arr(_n, _d1), _fn(_e(_d2), COMM), COMM)),
}

# vector reshape primitives, one family member per legal width
for _w in VECTOR_WIDTHS:
    _vec = Vector(_w)
    PRIMITIVES[f"asVector{_w}"] = _dep(
        [("m", "nat")], _fn(_exp_arr(_m * _w, NUM),
                            _exp_arr(_m, _vec)))
    PRIMITIVES[f"asScalar{_w}"] = _dep(
        [("m", "nat")], _fn(_exp_arr(_m, _vec),
                            _exp_arr(_m * _w, NUM)))
    PRIMITIVES[f"asVectorAcc{_w}"] = _dep(
        [("m", "nat")], _fn(_acc_arr(_m, _vec),
                            _acc_arr(_m * _w, NUM)))
    PRIMITIVES[f"asScalarAcc{_w}"] = _dep(
        [("m", "nat")], _fn(_acc_arr(_m * _w, NUM),
                            _acc_arr(_m, _vec)))


MAP_FAMILY = ("map", "mapGlobal", "mapWorkgroup", "mapLocal", "mapSeq")
MAPI_FAMILY = ("mapI", "mapIGlobal", "mapIWorkgroup", "mapILocal", "mapISeq")
PARFOR_FAMILY = ("parfor", "parforGlobal", "parforWorkgroup", "parforLocal")
TO_SPACE = {"toGlobal": "global", "toLocal": "local", "toPrivate": "private"}
NEW_SPACE = {"new": None, "newGlobal": "global", "newLocal": "local",
             "newPrivate": "private"}
MAP_TO_MAPI = {"map": "mapI", "mapGlobal": "mapIGlobal",
               "mapWorkgroup": "mapIWorkgroup", "mapLocal": "mapILocal",
               "mapSeq": "mapISeq"}
MAPI_TO_PARFOR = {"mapI": "parfor", "mapIGlobal": "parforGlobal",
                  "mapIWorkgroup": "parforWorkgroup", "mapILocal": "parforLocal"}
ARITH_OPS = ("+", "-", "*", "/")


def primitive_type(name: str) -> PhraseType:
    try:
        return PRIMITIVES[name]
    except KeyError:
        raise KeyError(f"unknown primitive: {name}") from None


def vector_widths_of(name: str) -> List[int]:
    return list(VECTOR_WIDTHS)
