if __name__ == "__main__":
    from fesc.cli import fesc

    fesc()
