import pandas as pd
from sklearn.model_selection import train_test_split

data = pd.read_csv("data.csv")
filled = data.fillna(0)
train, test = train_test_split(data, test_size=0.25)
