from tricache.system import mask_of


def mask(*users: int) -> int:
    return mask_of(users)
